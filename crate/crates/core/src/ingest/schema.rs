//! Column layouts of the chat export tables.

/// The 35 columns of a conforming messages export, in export order.
pub const MESSAGE_COLUMNS: [&str; 35] = [
    "id",
    "etag",
    "messageType",
    "createdDateTime",
    "lastModifiedDateTime",
    "lastEditedDateTime",
    "importance",
    "locale",
    "webUrl",
    "attachments",
    "mentions",
    "reactions",
    "from.user.@odata.type",
    "userId",
    "userDisplayName",
    "userIdentityType",
    "tenantId",
    "contentType",
    "content",
    "channelIdentity.teamId",
    "channelIdentity.channelId",
    "subject",
    "deletedDateTime",
    "eventDetail.@odata.type",
    "eventDetail.channelId",
    "eventDetail.channelDescription",
    "eventDetail.initiator.application",
    "eventDetail.initiator.device",
    "eventDetail.initiator.user.@odata.type",
    "eventDetail.initiator.user.id",
    "eventDetail.initiator.user.displayName",
    "eventDetail.initiator.user.userIdentityType",
    "eventDetail.channelDisplayName",
    "eventDetail.visibleHistoryStartDateTime",
    "eventDetail.members",
];

/// The 43 columns of a conforming replies export, in export order.
pub const REPLY_COLUMNS: [&str; 43] = [
    "id",
    "replyToId",
    "etag",
    "messageType",
    "createdDateTime",
    "lastModifiedDateTime",
    "lastEditedDateTime",
    "deletedDateTime",
    "subject",
    "summary",
    "chatId",
    "importance",
    "locale",
    "webUrl",
    "onBehalfOf",
    "policyViolation",
    "eventDetail",
    "attachments",
    "mentions",
    "reactions",
    "from.application",
    "from.device",
    "from.user.@odata.type",
    "userId",
    "userDisplayName",
    "userIdentityType",
    "tenantId",
    "contentType",
    "content",
    "channelIdentity.teamId",
    "channelIdentity.channelId",
    "from",
    "eventDetail.@odata.type",
    "eventDetail.callId",
    "eventDetail.callDuration",
    "eventDetail.callEventType",
    "eventDetail.callParticipants",
    "eventDetail.initiator.application",
    "eventDetail.initiator.device",
    "eventDetail.initiator.user.@odata.type",
    "eventDetail.initiator.user.id",
    "eventDetail.initiator.user.displayName",
    "eventDetail.initiator.user.userIdentityType",
];

pub(crate) const COL_ID: &str = "id";
pub(crate) const COL_CREATED: &str = "createdDateTime";
pub(crate) const COL_CONTENT: &str = "content";
pub(crate) const COL_SENDER_NAME: &str = "userDisplayName";
pub(crate) const COL_SENDER_ID: &str = "userId";
pub(crate) const COL_CHANNEL: &str = "channelIdentity.channelId";
pub(crate) const COL_PARENT: &str = "replyToId";

pub(crate) const MESSAGE_REQUIRED: [&str; 6] = [
    COL_ID,
    COL_CREATED,
    COL_CONTENT,
    COL_SENDER_NAME,
    COL_SENDER_ID,
    COL_CHANNEL,
];

pub(crate) const REPLY_REQUIRED: [&str; 6] = [
    COL_ID,
    COL_PARENT,
    COL_CREATED,
    COL_CONTENT,
    COL_SENDER_NAME,
    COL_SENDER_ID,
];

/// True when `header` is exactly the conforming column list.
pub fn header_matches(header: &[String], expected: &[&str]) -> bool {
    header.len() == expected.len() && header.iter().zip(expected).all(|(h, e)| h == e)
}
